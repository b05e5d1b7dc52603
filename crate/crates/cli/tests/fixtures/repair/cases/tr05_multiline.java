package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void threeIsEven() {
        Calc calc = new Calc();
        assertTrue(
                calc.isEven(3));
    }
}
