package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void describesStock() {
        Calc calc = new Calc();
        assertEquals("The inventory item named bolt has a stock count of 3", calc.describe("bolt", 4));
    }
}
